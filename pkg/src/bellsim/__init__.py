"""Bell-test simulation and analysis under locally causal, contextual
hidden-variable models."""
from .coupling import (FeasibilityResult, JointDistribution16, chsh_identity,
                       empirical_chsh_from_coupling, facet_check, jp_feasibility,
                       product_coupling, sample_coupling)
from .crosscheck import exact_vs_mc_check
from .events import (ClickStream, RawDataset, TimingConfig, TrialRecord, generate_click_streams,
                     pair_by_window, run_experiment)
from .exact import BudgetExceeded, ExactReport, exact_report
from .model import (HvModel, ModelError, evaluate_outcomes, gallery_model, gallery_names,
                    load_model, resolve_model, sample_trial_state, to_model3, validate_model)
from .pipeline import FinalDataset, extract_final
from .stats import CorrelationTable, NoSignalingReport, chsh, correlation_table, no_signaling_test

__version__ = "0.1.0"
