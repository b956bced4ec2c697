"""Simulation of SLM-controlled spontaneous emission from trapped ions."""
from __future__ import annotations

from .emitter import DriveParams, SteadyState, c1, c2, liouvillian, steady_state, tau_correlator
from .entanglement import (DickeParams, ProtocolBudget, herald_fidelity, loss_budget,
                           rate_estimate, success_probability, w_state_amplitudes)
from .errors import (DomainError, ExtentError, GeometryError, ResolutionError, ScenarioError,
                     SlmIonError, UndersamplingError)
from .masks import (SectorLayout, SLMGeometry, SLMPhaseMask, blazed_sector_mask,
                    quantize_and_losses, sector_partition, suppression_mask)
from .motion import ThermalState, c3, mean_phonon, position_sigma, residual_image_intensity
from .optics import (DESTRUCTIVE_PSI, ComplexField2D, GridSpec, IonChain, OpticalTrain,
                     PlaneKind, composite_ion_plane_field, detector_farfield, detector_image,
                     forward_farfield, ion_source_field, reflect_via_slm)

__version__ = "0.1.0"
