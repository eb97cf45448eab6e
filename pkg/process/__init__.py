# Process package: covariance kernels, discounting, exact sampling, reserve paths
