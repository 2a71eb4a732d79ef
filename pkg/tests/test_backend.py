import subprocess
import sys


def _active_backend(env_value=None):
    code = (
        "import cstune.backend as b; print(b.ACTIVE)"
    )
    env = {"PATH": "/usr/bin:/bin:/usr/local/bin"}
    if env_value is not None:
        env["CSTUNE_BACKEND"] = env_value
    out = subprocess.run(
        [sys.executable, "-c", code], capture_output=True, text=True, env=env
    )
    assert out.returncode == 0, out.stderr
    return out.stdout.strip()


def test_default_backend_is_numba():
    assert _active_backend() == "numba"


def test_env_flag_selects_numpy_fallback():
    assert _active_backend("numpy") == "numpy"


def test_env_flag_explicit_numba():
    assert _active_backend("numba") == "numba"


def test_invalid_flag_raises():
    code = "import cstune.backend"
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True, text=True,
        env={"PATH": "/usr/bin:/bin:/usr/local/bin", "CSTUNE_BACKEND": "cuda"},
    )
    assert out.returncode != 0
    assert "CSTUNE_BACKEND" in out.stderr
