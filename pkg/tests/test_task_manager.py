from task_manager import TaskManager, task_manager


def test_singleton():
    assert TaskManager() is task_manager


def test_lifecycle():
    task_manager.start_task("tm:lifecycle", total=4, message="go")
    task_manager.advance("tm:lifecycle")
    task_manager.advance("tm:lifecycle", step=1)
    status = task_manager.get_status("tm:lifecycle")
    assert status["status"] == "running"
    assert status["current"] == 2
    assert status["percent"] == 50

    task_manager.complete_task("tm:lifecycle", "done", {"hits": 3})
    status = task_manager.get_status("tm:lifecycle")
    assert status["status"] == "completed"
    assert status["percent"] == 100
    assert status["result"] == {"hits": 3}
    assert status["elapsed"] >= 0


def test_fail():
    task_manager.start_task("tm:fail", total=1)
    task_manager.fail_task("tm:fail", "boom")
    status = task_manager.get_status("tm:fail")
    assert status["status"] == "failed"
    assert "boom" in status["message"]


def test_unknown_task_is_idle():
    assert task_manager.get_status("tm:never") == {"status": "idle"}
    task_manager.advance("tm:never")
    assert task_manager.get_status("tm:never") == {"status": "idle"}


def test_status_is_a_copy():
    task_manager.start_task("tm:copy", total=2)
    task_manager.get_status("tm:copy")["current"] = 99
    assert task_manager.get_status("tm:copy")["current"] == 0
    assert "tm:copy" in task_manager.get_status()
