"""Quantum-optics experiment simulation, generation and latent-space search."""

from .encoding import (ParseError, SetupRecord, ToolboxConfig, Vocabulary,
                       encode_onehot, decode_onehot, parse, read_dataset,
                       render, write_dataset)
from .entanglement import (BIPARTITIONS, BIPARTITION_NAMES, EntanglementSummary,
                           bipartition_spectrum, entropy, schmidt_rank, summarize)
from .model import Qovae, QovaeConfig, encode_dataset
from .quantum import (AmplitudeOverflowError, Device, EmptyStateError,
                      QuantumState, apply_device, beam_splitter, dove_prism,
                      down_converter, four_photon_table, hologram,
                      initial_state, mirror, phase_aligned, run_setup,
                      square_and_postselect, states_proportional)
from .ring import Amplitude

__version__ = "0.1.0"

__all__ = [
    "Amplitude", "AmplitudeOverflowError", "BIPARTITIONS", "BIPARTITION_NAMES",
    "Device", "EmptyStateError", "EntanglementSummary", "ParseError", "Qovae",
    "QovaeConfig", "QuantumState", "SetupRecord", "ToolboxConfig", "Vocabulary",
    "apply_device", "beam_splitter", "bipartition_spectrum", "decode_onehot",
    "dove_prism", "down_converter", "encode_dataset", "encode_onehot",
    "entropy", "four_photon_table", "hologram", "initial_state", "mirror",
    "parse", "phase_aligned", "read_dataset", "render", "run_setup",
    "schmidt_rank", "square_and_postselect", "states_proportional",
    "summarize", "write_dataset",
]
