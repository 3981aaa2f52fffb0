"""Flat run-configuration files.

Grammar: one `section.key = value` assignment per line.  Blank lines and
lines whose first non-space character is '#' or ';' are comments.  Keys
not in the schema are rejected, as are duplicates, so a typo fails the run
instead of silently falling back to a default.

Example::

    # 24x24 box, one-vortex base flow
    grid.nx = 24
    grid.ny = 24
    physics.nu = 0.5
    physics.forcing = vortex
    physics.sigma_margin = 2.5
    control.gamma = auto
    sim.dt = 5e-4
    sim.t_final = 2.0

physics.sigma is an absolute spectral shift; physics.sigma_margin instead
asks for the shift that puts the rightmost eigenvalue of the unshifted
linearization at exactly that margin.  At most one of the two may be set.
control.gamma = auto selects the largest decay rate the stable part
supports, minus control.epsilon.
"""

import os

from .errors import ConfigError
from .grid import Grid, OmegaMask
from .norms import NormParams

_REQUIRED = object()


def _positive(x):
    return x > 0


def _fraction(x):
    return 0.0 <= x <= 1.0


_MODES = ("open", "linear", "nonlinear", "original")
_FAMILIES = ("vortex", "gradient", "shear")
_IC = ("random", "unstable", "stable")

# key -> (parser, default, validator or None)
_SCHEMA = {
    "grid.nx": (int, _REQUIRED, lambda v: v >= 4),
    "grid.ny": (int, _REQUIRED, lambda v: v >= 4),
    "grid.lx": (float, 1.0, _positive),
    "grid.ly": (float, 1.0, _positive),
    "physics.nu": (float, _REQUIRED, _positive),
    "physics.forcing": (str, "vortex", lambda v: v in _FAMILIES),
    "physics.amplitude": (float, 1.0, None),
    "physics.k": (int, 1, _positive),
    "physics.sigma": (float, None, None),
    "physics.sigma_margin": (float, None, None),
    "spectrum.tau_eig": (float, None, _positive),
    "norms.q": (float, 3.0, None),
    "norms.p": (float, 1.2, None),
    "omega.x0": (float, 0.25, _fraction),
    "omega.x1": (float, 0.75, _fraction),
    "omega.y0": (float, 0.25, _fraction),
    "omega.y1": (float, 0.75, _fraction),
    "control.gamma": (str, "auto", None),
    "control.epsilon": (float, 0.05, _positive),
    "control.delta_sep": (float, None, _positive),
    "control.n_actuators": (int, None, _positive),
    "control.trials": (int, 40, _positive),
    "control.seed": (int, 0, None),
    "control.tau_rank": (float, 1e-8, _positive),
    "sim.dt": (float, 1e-3, _positive),
    "sim.t_final": (float, 1.0, _positive),
    "sim.mode": (str, "linear", lambda v: v in _MODES),
    "sim.record_every": (int, 1, _positive),
    "sim.ic": (str, "random", lambda v: v in _IC),
    "sim.amplitude": (float, 1e-3, lambda v: v >= 0),
    "sim.seed": (int, 0, None),
    "output.dir": (str, None, None),
}


class RunConfig:
    """Validated flat configuration; values live in self.values."""

    def __init__(self, values):
        self.values = dict(values)
        if self.values["physics.sigma"] is not None and \
                self.values["physics.sigma_margin"] is not None:
            raise ConfigError(
                "set physics.sigma or physics.sigma_margin, not both"
            )
        if not (self.values["omega.x0"] < self.values["omega.x1"]
                and self.values["omega.y0"] < self.values["omega.y1"]):
            raise ConfigError("omega window must have positive extent")
        gamma = self.values["control.gamma"]
        if gamma != "auto":
            try:
                parsed = float(gamma)
            except ValueError:
                raise ConfigError(
                    f"control.gamma must be 'auto' or a number, got {gamma!r}"
                )
            if parsed <= 0:
                raise ConfigError("control.gamma must be positive")
            self.values["control.gamma"] = parsed
        # Norm exponents are validated by the norm layer itself.
        NormParams(self.values["norms.q"], self.values["norms.p"])

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def parse(cls, path):
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path) as fh:
            text = fh.read()
        return cls.from_text(text, source=path)

    @classmethod
    def from_text(cls, text, source="<string>"):
        values = {k: (None if d is _REQUIRED else d)
                  for k, (_, d, _) in _SCHEMA.items()}
        seen = set()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line[0] in "#;":
                continue
            if "=" not in line:
                raise ConfigError(
                    f"{source}:{lineno}: expected 'section.key = value', "
                    f"got {raw!r}"
                )
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _SCHEMA:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            if key in seen:
                raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
            seen.add(key)
            parser, _, check = _SCHEMA[key]
            try:
                parsed = parser(value)
            except ValueError:
                raise ConfigError(
                    f"{source}:{lineno}: cannot read {value!r} as "
                    f"{parser.__name__} for {key}"
                )
            if check is not None and not check(parsed):
                raise ConfigError(
                    f"{source}:{lineno}: value {value!r} out of range for {key}"
                )
            values[key] = parsed
        missing = [k for k, (_, d, _) in _SCHEMA.items()
                   if d is _REQUIRED and values[k] is None]
        if missing:
            raise ConfigError(f"{source}: missing required keys {missing}")
        return cls(values)

    def make_grid(self):
        return Grid(self["grid.nx"], self["grid.ny"],
                    self["grid.lx"], self["grid.ly"])

    def norm_params(self):
        return NormParams(self["norms.q"], self["norms.p"])

    def omega_mask(self, grid):
        return OmegaMask.rectangle(
            grid, self["omega.x0"], self["omega.x1"],
            self["omega.y0"], self["omega.y1"],
        )

    def resolve_sigma(self, unshifted_max_real):
        """Absolute shift, honoring the margin form if that one was set."""
        margin = self["physics.sigma_margin"]
        if margin is not None:
            return -float(unshifted_max_real) + margin
        sigma = self["physics.sigma"]
        return 0.0 if sigma is None else sigma

    def grid_echo(self):
        return {
            "nx": self["grid.nx"], "ny": self["grid.ny"],
            "lx": self["grid.lx"], "ly": self["grid.ly"],
        }
