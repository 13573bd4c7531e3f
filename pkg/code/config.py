"""
config.py
-------------------------------------------------
Numerical defaults for the transport toolkit.

Every setting can be overridden from the environment with the same name
prefixed by `TRANSPORT_`, e.g.

    export TRANSPORT_ODE_TOLERANCE=1e-7
    export TRANSPORT_OUT_DIR=/home/user/data/transport

Run configs (see docs/config_schema.md) and CLI flags override these again.

-------------------------------------------------
"""

import os


def _env(name: str, default):
    raw = os.getenv(f"TRANSPORT_{name}")
    if raw is None:
        return default
    return type(default)(raw)


# ───────────────────────────────────────────────
# 1. Tolerances
# ───────────────────────────────────────────────
# ODE-backed transports (connection lifts)
ODE_TOLERANCE: float = _env("ODE_TOLERANCE", 1e-6)
# Algebraic transports (foliation, group, factorized)
ALGEBRAIC_TOLERANCE: float = _env("ALGEBRAIC_TOLERANCE", 1e-10)
# Pointwise path equality
PATH_EQUALITY_TOLERANCE: float = _env("PATH_EQUALITY_TOLERANCE", 1e-9)
# Jump of finite-difference derivatives allowed by the C1 proxy check
C1_JUMP_TOLERANCE: float = _env("C1_JUMP_TOLERANCE", 0.1)


# ───────────────────────────────────────────────
# 2. Sampling
# ───────────────────────────────────────────────
PATH_GRID_SAMPLES: int = _env("PATH_GRID_SAMPLES", 101)
# random fibre elements per base point on continuous fibres
FIBER_SAMPLES: int = _env("FIBER_SAMPLES", 8)
DEFAULT_SEED: int = _env("DEFAULT_SEED", 0)
# cap on failing tuples kept in one report
WITNESS_LIMIT: int = _env("WITNESS_LIMIT", 25)


# ───────────────────────────────────────────────
# 3. Numerics
# ───────────────────────────────────────────────
# default RK4 step = domain length / ODE_STEPS_PER_DOMAIN
ODE_STEPS_PER_DOMAIN: int = _env("ODE_STEPS_PER_DOMAIN", 1000)
# central-difference step for lift tangents
FD_STEP: float = _env("FD_STEP", 1e-4)
# group payloads are projected back onto the group above this residual
RENORMALIZE_THRESHOLD: float = _env("RENORMALIZE_THRESHOLD", 1e-9)
# sphere chart excludes colatitudes within this margin of a pole
POLE_MARGIN: float = _env("POLE_MARGIN", 1e-6)
# "frobenius" or "log"
GROUP_DISTANCE: str = _env("GROUP_DISTANCE", "frobenius")


# ───────────────────────────────────────────────
# 4. Run settings
# ───────────────────────────────────────────────
MAX_WORKERS: int = _env("MAX_WORKERS", 4)
OUT_DIR: str = _env("OUT_DIR", "./data")
