# zrsolver/__init__.py
from .cn_stepper import CNFPStepper, cn_fp_step
from .field_structures import (FieldState, IntegrationSummary, InvariantRecord,
                               IterationReport, StageSlopes)
from .invariants import (drift, energy_quadratic, error_norms, hamiltonian,
                         invariant_record, linear_invariants, mass)
from .model import (CollisionCase, InvalidSolitonError, Params,
                    SingularParameterError, SolitonSpec, collision_case,
                    derive_q, initial_collision, initial_single, pde_residual,
                    resolve_amplitude_convention, solitary_wave)
from .Observers import (BaseObserver, ErrorRecorder, InvariantRecorder,
                        SnapshotRecorder)
from .oracle import (DenseOperator, OracleError, dense_diff_matrix,
                     newton_stage_solve, quadrature)
from .rk_stepper import (FPRKStepper, RKStepperConfig,
                         SingularStageMatrixError, StageSolver,
                         build_stage_solver)
from .Simulation import RunConfig, Simulation, supported_schemes
from .spectral import (SpectralGrid, apply_d1, apply_d2, build_grid, inner,
                       norm_h, norm_inf)
from .stepper import StageSolveError, StepperConfig, TimeStepper
from .tableau import Tableau, gauss_tableau, get_tableau, symplectic_defect
