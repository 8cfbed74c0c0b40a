"""Dynamical Casimir field generation and its indirect readout by probe atoms."""

__version__ = "0.1.0"

from .dynamics import (  # noqa: E402
    AtomParams,
    DriveProfile,
    ExternalPulse,
    PropagatorConfig,
    generate_dce_field,
    propagate,
)
from .estimators import (  # noqa: E402
    PLAIN,
    ROTATED_1,
    ROTATED_2,
    TauScan,
    estimate_mean_n,
    estimate_Q2,
    estimate_Q_mean,
    fit_derivatives,
    scan_probability,
    squeezing_witness,
)
from .fock import (  # noqa: E402
    FieldState,
    SqueezeParams,
    expectation,
    make_mode_operators,
    quadrature_Q,
    squeezed_vacuum,
    thermal_state,
    vacuum_state,
    variance,
)
from .measurement import (  # noqa: E402
    KrausPair,
    conditional_update,
    exact_atom_passage,
    jc_kraus,
    outcome_probability,
    rotated_kraus,
    two_atom_probability,
)
