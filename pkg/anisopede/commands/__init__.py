"""
Init file for commands package
"""

from anisopede.commands.simulate import register as register_simulate
from anisopede.commands.verify import register as register_verify
from anisopede.commands.monitor import register as register_monitor

__all__ = ["register_simulate", "register_verify", "register_monitor"]
