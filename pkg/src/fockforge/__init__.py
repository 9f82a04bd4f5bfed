"""Fock-space simulation of linear-optics circuits with imperfect photons."""

from .circuit import Circuit, DetectorSpec, ElementSpec, ModeMap, beamsplitter_matrix, haar_unitary
from .cores import BasisSpec, amplitude, enumerate_basis, transform
from .device import Device, ensemble, load_device, run, run_state
from .errors import (CapacityError, DegeneratePacketError, DimensionError, ElementError,
                     EncodingError, FockForgeError, GainError, NormalizationError,
                     SamplerError, ValidationError)
from .losses import DilatedCircuit, dilate, dilate_circuit, pad_state, trace_out_losses
from .measurement import (DensityMatrix, ProbabilityBins, add_noise, apply_condition,
                          bins_from_state, dark_counts, dead_time, detection_pipeline,
                          enumerate_projectors, project, translate)
from .packets import PacketSpec, gram_schmidt, overlap_matrix, packet_overlap
from .permanent import glynn_permanent, naive_permanent
from .samplers import SampleConfig, classical_sample, clifford_a_sample, metropolis_sample
from .sources import QDParams, qd_density_matrix, qd_probabilities, sample_qd_pair
from .state import QubitMap, State, braket, decode_qubits, encode_qubits

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
