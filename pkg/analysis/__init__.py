# Analysis package: variance functions and asymptotics
