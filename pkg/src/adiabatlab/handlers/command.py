"""
Command handler.
Reads sub-command defaults from commands.json and dispatches to the drivers.
"""

import inspect
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from ..errors import ConfigError
from ..settings import get_settings
from .bounds import run_check_gap, run_lr, run_norms, run_weight_table
from .context import RunContext
from .response import run_neass, run_response
from .sweep import run_adiabatic_sweep, run_first_order, run_resummation
from .tdl import run_tdl

logger = logging.getLogger(__name__)

DRIVERS = {
    "check-gap": run_check_gap,
    "sweep": run_adiabatic_sweep,
    "response": run_response,
    "tdl": run_tdl,
    "lr": run_lr,
    "norms": run_norms,
    "weight-table": run_weight_table,
    "neass": run_neass,
    "resum": run_resummation,
    "first-order": run_first_order,
}


class CommandHandler:
    def __init__(self, config_file: Optional[str] = None):
        """Initialize the command handler."""
        self.config_file = Path(config_file or Path(get_settings().config_dir) / "commands.json")
        self.commands: Dict[str, Dict] = {}
        self.load_commands()

    def load_commands(self):
        """Load sub-command defaults from the JSON configuration file."""
        try:
            with open(self.config_file, "r", encoding="utf-8") as f:
                data = json.load(f)
            self.commands = data.get("commands", {})
            logger.info(f"Loaded {len(self.commands)} commands from {self.config_file}")
        except FileNotFoundError:
            logger.warning(f"Commands file {self.config_file} not found. Creating default...")
            self.create_default_config()
            self.load_commands()
        except json.JSONDecodeError as e:
            raise ConfigError(f"Error parsing {self.config_file}: {e}", str(self.config_file)) from None
        unknown = sorted(set(self.commands) - set(DRIVERS))
        if unknown:
            raise ConfigError(f"{self.config_file} names unknown commands {unknown}", "/commands")

    def create_default_config(self):
        """Create a default commands configuration file."""
        default_config = {
            "commands": {
                "check-gap": {
                    "description": "Gap, multiplicity and patch edges on every (k, t)",
                    "defaults": {"spectrum": False},
                },
                "sweep": {
                    "description": "Tracking error of the super-adiabatic state over an (ε, η) grid",
                    "defaults": {
                        "n": 1,
                        "eps_grid": [0.0, 0.003, 0.01, 0.03, 0.1],
                        "eta_grid": [0.001],
                        "slope_margin": 0.7,
                    },
                },
                "response": {
                    "description": "Switched-on response against its Kubo expansion, η = ε^(3/4)",
                    "defaults": {
                        "n": 1,
                        "eps_grid": [0.001, 0.003, 0.01, 0.03, 0.1],
                        "observable": "density0",
                        "exponent": 0.75,
                    },
                },
                "tdl": {
                    "description": "Ground-state expectations and dynamics over growing boxes",
                    "defaults": {"M": 1, "eta": 1.0, "tau": 1.0},
                },
                "lr": {
                    "description": "Lieb-Robinson light cone of a density at the left edge",
                    "defaults": {"eta": 1.0},
                },
                "norms": {
                    "description": "ζ-norms, LR constants, decay flags and the extension bound",
                    "defaults": {"n_values": [0, 1, 2], "samples": 3},
                },
                "weight-table": {
                    "description": "Tables of W(s) and Ŵ(ω)",
                    "defaults": {"s_max": 40.0, "points": 401},
                },
                "neass": {
                    "description": "Stationarity of the NEASS at a time where H^ε does not move",
                    "defaults": {"n_values": [1, 2], "eps_grid": [0.0, 0.001, 0.003, 0.01, 0.03, 0.1]},
                },
                "resum": {
                    "description": "Resummed generator against S_n on an (ε, η) grid",
                    "defaults": {
                        "n": 2,
                        "eps_grid": [0.01, 0.02, 0.04, 0.08, 0.16],
                        "eta_grid": [0.01, 0.02, 0.04, 0.08, 0.16],
                    },
                },
                "first-order": {
                    "description": "A₁ against I((η/ε)I(Ḣ₀) − V) on the time grid",
                    "defaults": {"tol": 1e-9},
                },
            }
        }

        self.config_file.parent.mkdir(parents=True, exist_ok=True)
        with open(self.config_file, "w", encoding="utf-8") as f:
            json.dump(default_config, f, indent=4, ensure_ascii=False)
        logger.info(f"Created default commands config at {self.config_file}")

    def generate_help(self) -> str:
        lines = ["Available commands:"]
        for name in DRIVERS:
            description = self.commands.get(name, {}).get("description", "")
            lines.append(f"  {name:<13} {description}")
        return "\n".join(lines)

    def parameters(self, command: str, overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """Defaults from commands.json updated with overrides, checked against the driver."""
        if command not in DRIVERS:
            raise ConfigError(f"Unknown command: {command}. Use one of {sorted(DRIVERS)}")
        params = dict(self.commands.get(command, {}).get("defaults", {}))
        params.update(overrides or {})
        accepted = set(inspect.signature(DRIVERS[command]).parameters) - {"ctx"}
        unknown = sorted(set(params) - accepted)
        if unknown:
            raise ConfigError(f"{command} does not take {unknown}; accepted: {sorted(accepted)}", f"/commands/{command}/defaults")
        return params

    async def handle_command(self, command: str, ctx: RunContext, overrides: Optional[Dict[str, Any]] = None):
        """Run one sub-command and write its tables, plots and report.

        Args:
            command: sub-command name (see DRIVERS)
            ctx: run context with the loaded model
            overrides: parameters taking precedence over commands.json
        """
        params = self.parameters(command, overrides)
        logger.info(f"▶️ {command} on {ctx.config.name} with {params}")
        try:
            table = await DRIVERS[command](ctx, **params)
        finally:
            # tables and report are written even when a bound fails
            await ctx.write_all()
        logger.info(f"✅ {command} finished in {ctx.budget.elapsed:.1f}s ({len(table)} rows)")
        return table
