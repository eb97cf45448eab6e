import threading
import logging
import time

logger = logging.getLogger(__name__)

class TaskManager:
    """Thread-safe registry of long-running simulation tasks and their chunk progress."""

    _instance = None
    _lock = threading.Lock()

    def __init__(self):
        if not hasattr(self, 'initialized'):
            self.tasks = {}  # task key -> status dict
            self.initialized = True

    def __new__(cls):
        with cls._lock:
            if cls._instance is None:
                cls._instance = super(TaskManager, cls).__new__(cls)
            return cls._instance

    def start_task(self, task_key: str, total: int = 0, message: str = "Started"):
        with self._lock:
            self.tasks[task_key] = {
                "status": "running",
                "message": message,
                "current": 0,
                "total": total,
                "percent": 0,
                "start_time": time.monotonic(),
            }
            logger.debug(f"Task started: {task_key} with total={total}")

    def advance(self, task_key: str, step: int = 1):
        """Count `step` finished work units; safe to call from worker threads."""
        with self._lock:
            task = self.tasks.get(task_key)
            if task is None:
                logger.warning(f"Attempted to advance non-existent task: {task_key}")
                return
            task["current"] += step
            if task["total"] > 0:
                task["percent"] = round((task["current"] / task["total"]) * 100)

    def complete_task(self, task_key: str, message: str = "Completed", result: dict = None):
        with self._lock:
            if task_key in self.tasks:
                task = self.tasks[task_key]
                task["status"] = "completed"
                task["message"] = message
                task["percent"] = 100
                task["result"] = result
                task["elapsed"] = time.monotonic() - task["start_time"]
                logger.debug(f"Task completed: {task_key} in {task['elapsed']:.2f}s")

    def fail_task(self, task_key: str, error: str):
        with self._lock:
            if task_key in self.tasks:
                task = self.tasks[task_key]
                task["status"] = "failed"
                task["message"] = f"Error: {error}"
                logger.error(f"Task failed: {task_key} - {error}")

    def get_status(self, task_key: str = None) -> dict:
        with self._lock:
            if task_key:
                return dict(self.tasks.get(task_key, {"status": "idle"}))
            return {key: dict(task) for key, task in self.tasks.items()}

# Global singleton
task_manager = TaskManager()
