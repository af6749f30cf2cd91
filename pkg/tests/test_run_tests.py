import importlib.util
import subprocess
from pathlib import Path

import pytest

SCRIPT = Path(__file__).resolve().parent.parent / "scripts" / "run_tests.py"


@pytest.fixture
def run_tests_module():
    spec = importlib.util.spec_from_file_location("run_tests", SCRIPT)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


@pytest.mark.unit
class TestProfiles:
    """Perfis do script de testes"""

    def test_parallel_profile_uses_xdist(self, run_tests_module, mocker):
        completed = subprocess.CompletedProcess(args=[], returncode=0, stdout="", stderr="")
        run = mocker.patch.object(run_tests_module.subprocess, "run", return_value=completed)
        runner = run_tests_module.TestRunner(SCRIPT.parent.parent)
        result = runner.run_profile("parallel")
        command = run.call_args.args[0]
        assert result["success"]
        assert command[command.index("-n") + 1] == "auto"
        assert "not slow" in command

    def test_every_profile_is_selectable(self, run_tests_module):
        assert {"fast", "parallel", "acceptance", "coverage"} <= set(run_tests_module.PROFILES)
