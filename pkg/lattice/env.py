import os
from contextlib import contextmanager

from dotenv import load_dotenv
from pydantic import BaseModel, Field

# Make logfire optional
try:
    import logfire

    LOGFIRE_AVAILABLE = True
except ImportError:
    LOGFIRE_AVAILABLE = False

    class DummyLogfire:
        """No-op stand-in exposing the subset of the logfire API used here."""

        def span(self, *args, **kwargs):
            @contextmanager
            def dummy_context():
                yield

            return dummy_context()

        def info(self, *args, **kwargs):
            pass

        def warn(self, *args, **kwargs):
            pass

        def debug(self, *args, **kwargs):
            pass

        def error(self, *args, **kwargs):
            pass

    logfire = DummyLogfire()


class Settings(BaseModel):
    """Process-wide knobs read from the environment."""

    threads: int = Field(default=1, ge=1, description="Worker cap for parallel sweeps")
    quad_tol: float = Field(default=1e-10, gt=0, description="Default quadrature tolerance")
    point_cap: int = Field(default=2**20, ge=64, description="Trapezoid doubling cap")


_configured = False
_thread_override: int | None = None


def setup_env():
    global _configured
    load_dotenv()

    if _configured or not LOGFIRE_AVAILABLE:
        return
    if logfire_token := os.getenv("LOGFIRE_KEY"):
        logfire.configure(token=logfire_token, console=False)
    else:
        logfire.configure(send_to_logfire=False, console=False)
    _configured = True


def get_settings() -> Settings:
    settings = Settings(
        threads=int(os.getenv("LATTICE_THREADS", "1")),
        quad_tol=float(os.getenv("LATTICE_QUAD_TOL", "1e-10")),
        point_cap=int(os.getenv("LATTICE_POINT_CAP", str(2**20))),
    )
    if _thread_override is not None:
        settings = settings.model_copy(update={"threads": _thread_override})
    return settings


def set_thread_override(threads: int | None):
    """Cap worker threads for the rest of the process (CLI --threads)."""
    global _thread_override
    if threads is not None and threads < 1:
        raise ValueError("threads must be >= 1")
    _thread_override = threads
