"""Simulation and verification of ontological models of quantum theory."""

from .errors import (
    ActionOrderError,
    ContractViolationError,
    DimensionMismatchError,
    ModelViolationError,
    NegativityError,
    NotPsiOnticError,
    OntosimError,
    OutcomeIndexError,
    ResourceLimitError,
    UndecidableError,
    UndefinedUpdateError,
    UnknownLabelError,
    UnsupportedOperationError,
    UpdateImpossibleError,
)
from .hmmchannel import (
    JointKernel,
    Measure,
    Prepare,
    Transform,
    build_joint_kernel,
    parse_actions,
    recover_eta,
    run_channel,
)
from .models_epistemic import (
    SubtheorySpec,
    build_abcl0,
    build_abcl1_finite,
    build_kitchen_sink,
    build_ljbr,
)
from .models_ontic import build_bell, build_beltrametti_bugajski
from .models_qubit import build_kochen_specker, build_montina
from .nogo import (
    ContradictionWitness,
    abcl0_witness,
    kitchen_sink_overlap_integral,
    ljbr_witness,
    theorem1_check,
    transformation_constraint_check,
)
from .ontomodel import (
    EnumerableModel,
    OntologicalModel,
    VerificationReport,
    check_prepare_measure,
    check_prepare_transform_measure,
    check_sequential,
    classify_epistemicity,
    convex_combination,
    mixture,
)
from .qcore import (
    DensityMatrix,
    Instrument,
    Projector,
    ProjectiveMeasurement,
    PureState,
    born_probability,
    luders_update,
    sequential_probability,
)
from .stabilizer import build_wigner_model, enumerate_stabilizer_states

__version__ = "0.1.0"

__all__ = [
    "ActionOrderError",
    "ContractViolationError",
    "ContradictionWitness",
    "DensityMatrix",
    "DimensionMismatchError",
    "EnumerableModel",
    "Instrument",
    "JointKernel",
    "Measure",
    "ModelViolationError",
    "NegativityError",
    "NotPsiOnticError",
    "OntologicalModel",
    "OntosimError",
    "OutcomeIndexError",
    "Prepare",
    "ProjectiveMeasurement",
    "Projector",
    "PureState",
    "ResourceLimitError",
    "SubtheorySpec",
    "Transform",
    "UndecidableError",
    "UndefinedUpdateError",
    "UnknownLabelError",
    "UnsupportedOperationError",
    "UpdateImpossibleError",
    "VerificationReport",
    "abcl0_witness",
    "born_probability",
    "build_abcl0",
    "build_abcl1_finite",
    "build_bell",
    "build_beltrametti_bugajski",
    "build_joint_kernel",
    "build_kitchen_sink",
    "build_kochen_specker",
    "build_ljbr",
    "build_montina",
    "build_wigner_model",
    "check_prepare_measure",
    "check_prepare_transform_measure",
    "check_sequential",
    "classify_epistemicity",
    "convex_combination",
    "enumerate_stabilizer_states",
    "kitchen_sink_overlap_integral",
    "ljbr_witness",
    "luders_update",
    "mixture",
    "parse_actions",
    "recover_eta",
    "run_channel",
    "sequential_probability",
    "theorem1_check",
    "transformation_constraint_check",
]
