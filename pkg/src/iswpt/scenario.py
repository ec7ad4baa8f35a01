"""Physical scenario: system parameters, array steering, path loss and channels.

Geometry is a narrowband downlink in which an N-antenna transmitter
illuminates an L-element reflective surface; the surface redirects energy
toward K single-antenna harvesting devices and M radar target directions.
All channels are flat-fading Rician draws scaled by distance path loss.

Unit conventions
----------------
* Angles are radians everywhere inside the package.  Config files use
  degrees and are converted on load.
* Power quantities are carried in milliwatts.  dBm fields in config files
  convert as p = 10**(dbm / 10) mW, so the reference 30 dBm budget becomes
  1000 mW.  Gains with a ``_db`` suffix convert as 10**(db / 10).
* Path loss is a linear power ratio: pl_ref * dist**(-ple).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * math.pi

# LoS sampling modes for sample_channels.  The default draws the LoS part
# i.i.d. Gaussian like the scattered part; "steering" swaps in a
# deterministic broadside rank-one LoS for sensitivity studies.
LOS_MODE_IID = "iid"
LOS_MODE_STEERING = "steering"


def db_to_linear(x_db: float) -> float:
    """Convert a dB gain to a linear power ratio."""
    return 10.0 ** (x_db / 10.0)


def dbm_to_power(x_dbm: float) -> float:
    """Convert dBm to linear power in milliwatts (30 dBm -> 1000 mW)."""
    return 10.0 ** (x_dbm / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Static description of one deployment.

    Defaults reproduce the desk-scale reference scenario used by the
    bundled experiments.
    """

    n_tx: int = 12               # transmit antennas N
    n_irs: int = 40              # reflective surface elements L
    n_ehd: int = 5               # energy harvesting devices K
    n_targets: int = 3           # radar target directions M
    p0: float = 1000.0           # total transmit power budget, mW
    eta: float = 0.8             # harvester RF-to-DC efficiency, in (0, 1]
    rho: float = 0.9             # trade-off weight, 1 = all power transfer
    delta: float = 0.5           # surface element spacing, wavelengths
    target_angles: tuple[float, ...] = (
        -math.pi / 4.0, 0.0, math.pi / 4.0)  # radians, in [-pi/2, pi/2]
    dist_tx_irs: float = 30.0    # m
    dist_irs_ehd: float = 30.0   # m
    dist_tx_ehd: float = 50.0    # m
    ple_tx_irs: float = 2.5      # path loss exponent, tx -> surface
    ple_irs_ehd: float = 2.5     # path loss exponent, surface -> devices
    ple_tx_ehd: float = 3.0      # path loss exponent, direct link
    pl_ref: float = 0.1          # reference path loss at 1 m, linear
    rician_k: float = db_to_linear(6.0)  # Rician factor, linear
    seed: int = 0                # master RNG seed
    los_mode: str = LOS_MODE_IID

    def __post_init__(self) -> None:
        for name in ("n_tx", "n_irs", "n_ehd", "n_targets"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not self.p0 > 0.0:
            raise ValueError(f"p0 must be positive, got {self.p0!r}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta!r}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho!r}")
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta!r}")
        angles = tuple(float(a) for a in self.target_angles)
        object.__setattr__(self, "target_angles", angles)
        if len(angles) != self.n_targets:
            raise ValueError(
                f"n_targets={self.n_targets} but {len(angles)} target angles given")
        for a in angles:
            if not -math.pi / 2.0 <= a <= math.pi / 2.0:
                raise ValueError(f"target angle {a!r} outside [-pi/2, pi/2]")
        for name in ("dist_tx_irs", "dist_irs_ehd", "dist_tx_ehd"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("ple_tx_irs", "ple_irs_ehd", "ple_tx_ehd"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not self.pl_ref > 0.0:
            raise ValueError(f"pl_ref must be positive, got {self.pl_ref!r}")
        if not self.rician_k > 0.0:
            raise ValueError(f"rician_k must be positive, got {self.rician_k!r}")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))
        if self.los_mode not in (LOS_MODE_IID, LOS_MODE_STEERING):
            raise ValueError(f"unknown los_mode {self.los_mode!r}")

    @property
    def per_antenna_power(self) -> float:
        """Per-antenna power budget p0 / n_tx (mW)."""
        return self.p0 / self.n_tx

    @property
    def beam_amplitude(self) -> float:
        """Constant per-antenna beamformer modulus sqrt(p0 / n_tx)."""
        return math.sqrt(self.p0 / self.n_tx)


@dataclass(frozen=True)
class ChannelSet:
    """One draw of every channel in the scenario.

    h_br : (L, N) transmitter -> surface matrix
    h_ru : (K, L) surface -> device rows
    h_d  : (K, N) direct transmitter -> device rows
    """

    h_br: np.ndarray
    h_ru: np.ndarray
    h_d: np.ndarray

    def __post_init__(self) -> None:
        for name in ("h_br", "h_ru", "h_d"):
            arr = np.asarray(getattr(self, name), dtype=np.complex128)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.h_br.ndim != 2 or self.h_ru.ndim != 2 or self.h_d.ndim != 2:
            raise ValueError("channel matrices must be 2-D")
        l_dim, n_dim = self.h_br.shape
        if self.h_ru.shape[1] != l_dim:
            raise ValueError("h_ru column count must match h_br rows")
        if self.h_d.shape != (self.h_ru.shape[0], n_dim):
            raise ValueError("h_d shape inconsistent with h_ru / h_br")


def steering_vector(theta: float, n_elements: int, delta: float = 0.5) -> np.ndarray:
    """Uniform linear array response, element l = exp(j*2*pi*l*delta*sin(theta)).

    Element 0 is exactly 1.  `delta` is the element spacing in wavelengths.
    """
    if n_elements < 1:
        raise ValueError(f"n_elements must be positive, got {n_elements}")
    idx = np.arange(n_elements)
    return np.exp(1j * TWO_PI * delta * math.sin(theta) * idx)


def steering_matrix(thetas: np.ndarray, n_elements: int, delta: float = 0.5) -> np.ndarray:
    """Stack of steering vectors, one row per angle."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    idx = np.arange(n_elements)
    return np.exp(1j * TWO_PI * delta * np.sin(thetas)[:, None] * idx[None, :])


def path_loss(pl_ref: float, dist: float, ple: float) -> float:
    """Distance path loss pl_ref * dist**(-ple) as a linear power ratio."""
    if not dist > 0.0:
        raise ValueError(f"distance must be positive, got {dist!r}")
    if not pl_ref > 0.0:
        raise ValueError(f"pl_ref must be positive, got {pl_ref!r}")
    return pl_ref * float(dist) ** (-float(ple))


def complex_normal(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Standard circularly symmetric complex Gaussian draws, E|z|^2 = 1.

    Box-Muller on paired uniforms: radius sqrt(-ln(1-u1)) and angle
    2*pi*u2, giving variance 1/2 per real component.  Using the raw
    uniform stream keeps draws identical across platforms for a fixed
    generator state.
    """
    u1 = rng.random(shape)
    u2 = rng.random(shape)
    radius = np.sqrt(-np.log1p(-u1))
    return radius * np.exp(1j * TWO_PI * u2)


def trial_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent PCG64 stream for one unit of work.

    Streams are derived from the master seed and an integer key path
    (e.g. sweep point index, trial index), so results do not depend on
    the order in which trials execute.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def _rician_draw(rng: np.random.Generator, shape: tuple[int, ...],
                 pl: float, k_factor: float,
                 los: np.ndarray | None = None) -> np.ndarray:
    """One Rician fading matrix with per-entry second moment `pl`."""
    if los is None:
        los = complex_normal(rng, shape)
    nlos = complex_normal(rng, shape)
    w_los = math.sqrt(k_factor / (k_factor + 1.0))
    w_nlos = math.sqrt(1.0 / (k_factor + 1.0))
    return math.sqrt(pl) * (w_los * los + w_nlos * nlos)


def sample_channels(config: SystemConfig, rng: np.random.Generator) -> ChannelSet:
    """Draw one ChannelSet.

    Draw order is fixed (h_br, then h_ru, then h_d; LoS before scattered
    within each link) so a given generator state always yields the same
    channels.  In the default "iid" mode the LoS component is itself an
    i.i.d. complex Gaussian draw, so the Rician factor only partitions
    variance between two statistically identical parts; the "steering"
    mode replaces the LoS part with deterministic broadside unit-modulus
    matrices for sensitivity studies.
    """
    n, l, k = config.n_tx, config.n_irs, config.n_ehd
    pl_br = path_loss(config.pl_ref, config.dist_tx_irs, config.ple_tx_irs)
    pl_ru = path_loss(config.pl_ref, config.dist_irs_ehd, config.ple_irs_ehd)
    pl_d = path_loss(config.pl_ref, config.dist_tx_ehd, config.ple_tx_ehd)

    if config.los_mode == LOS_MODE_STEERING:
        los_br = np.outer(steering_vector(0.0, l, config.delta),
                          steering_vector(0.0, n, config.delta))
        los_ru = np.ones((k, l), dtype=np.complex128)
        los_d = np.ones((k, n), dtype=np.complex128)
    else:
        los_br = los_ru = los_d = None

    h_br = _rician_draw(rng, (l, n), pl_br, config.rician_k, los_br)
    h_ru = _rician_draw(rng, (k, l), pl_ru, config.rician_k, los_ru)
    h_d = _rician_draw(rng, (k, n), pl_d, config.rician_k, los_d)
    return ChannelSet(h_br=h_br, h_ru=h_ru, h_d=h_d)


# --------------------------------------------------------------------------
# Config file parsing.  Files are flat "key = value" text: '#' starts a
# comment, angles carry a _deg suffix (degrees), powers a _dbm suffix and
# gains a _db suffix.  Lists are comma separated.

_INT_KEYS = {"n_tx", "n_irs", "n_ehd", "n_targets", "seed"}
_FLOAT_KEYS = {
    "p0", "eta", "rho", "delta", "dist_tx_irs", "dist_irs_ehd", "dist_tx_ehd",
    "ple_tx_irs", "ple_irs_ehd", "ple_tx_ehd", "pl_ref", "rician_k",
}
_STR_KEYS = {"los_mode"}


def parse_kv_file(path: str | Path) -> dict[str, str]:
    """Read a flat key = value file into a string mapping."""
    mapping: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip().lower()
        if key in mapping:
            raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
        mapping[key] = value.strip()
    return mapping


def config_from_mapping(mapping: dict[str, str]) -> SystemConfig:
    """Build a SystemConfig from string key/value pairs.

    Unknown keys are ignored (the experiment layer shares the same file).
    Degree and dB/dBm suffixed keys are converted here, at parse time;
    everything downstream sees radians and linear milliwatt units.
    """
    kwargs: dict[str, object] = {}
    for key in _INT_KEYS & mapping.keys():
        kwargs[key] = int(mapping[key])
    for key in _FLOAT_KEYS & mapping.keys():
        kwargs[key] = float(mapping[key])
    for key in _STR_KEYS & mapping.keys():
        kwargs[key] = mapping[key]
    if "p0_dbm" in mapping:
        kwargs["p0"] = dbm_to_power(float(mapping["p0_dbm"]))
    if "pl_ref_db" in mapping:
        kwargs["pl_ref"] = db_to_linear(float(mapping["pl_ref_db"]))
    if "rician_k_db" in mapping:
        kwargs["rician_k"] = db_to_linear(float(mapping["rician_k_db"]))
    if "target_angles_deg" in mapping:
        degs = [float(tok) for tok in mapping["target_angles_deg"].split(",") if tok.strip()]
        kwargs["target_angles"] = tuple(math.radians(d) for d in degs)
        kwargs.setdefault("n_targets", len(degs))
    return SystemConfig(**kwargs)


def load_system_config(path: str | Path) -> SystemConfig:
    """Parse a scenario description file into a SystemConfig."""
    return config_from_mapping(parse_kv_file(path))
