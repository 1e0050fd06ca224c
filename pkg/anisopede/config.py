"""
Configuration Module
====================
Loads and validates environment settings for the simulator and the lab.
Uses python-dotenv to load from a .env file next to the repository root.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Load .env file
env_path = Path(__file__).parent.parent / ".env"
load_dotenv(dotenv_path=env_path)


class Settings:
    """Process-wide settings loaded from environment variables."""

    # App Settings
    APP_NAME: str = os.getenv("APP_NAME", "anisopede")
    APP_VERSION: str = os.getenv("APP_VERSION", "1.0.0")
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO").upper()

    # Parallelism
    ANISOPEDE_THREADS: int = int(os.getenv("ANISOPEDE_THREADS", "1"))

    # Numerical defaults
    DEFAULT_QMAX: int = int(os.getenv("DEFAULT_QMAX", "128"))
    DEFAULT_CFL_SAFETY: float = float(os.getenv("DEFAULT_CFL_SAFETY", "0.5"))
    BLOWUP_THRESHOLD: float = float(os.getenv("BLOWUP_THRESHOLD", "1e12"))
    DEFAULT_M: float = float(os.getenv("DEFAULT_M", "4"))

    # Output
    FLOAT_FORMAT: str = os.getenv("FLOAT_FORMAT", ".17g")

    @classmethod
    def validate(cls) -> list[str]:
        """Validate critical settings."""
        errors = []
        if cls.ANISOPEDE_THREADS < 1:
            errors.append("ANISOPEDE_THREADS must be at least 1")
        if cls.DEFAULT_QMAX < 2:
            errors.append("DEFAULT_QMAX must be at least 2")
        if not 0 < cls.DEFAULT_CFL_SAFETY <= 1:
            errors.append("DEFAULT_CFL_SAFETY must lie in (0, 1]")
        if cls.DEFAULT_M <= 2:
            errors.append("DEFAULT_M must exceed 2")
        return errors

    @classmethod
    def workers(cls) -> int:
        """Worker count for FFTs and ensemble pools (never below 1)."""
        return max(1, cls.ANISOPEDE_THREADS)


settings = Settings()
