"""Identification engine for missing-data DAGs."""

from .graph import MDag, Pair, VertexKind, d_separated, validate
from .law import (DiscreteLaw, ObservedLaw, TargetLaw, condition, joint, observed_law,
                  random_law, target_law)
from .functional import Functional, evaluate
from .engine import (IdReport, identify_causal_effect, identify_target_law,
                     screen_self_censoring, sequential_swig_attempt)
from .model import certify_non_id, check_membership
from .swig import build_swig, detect_stitch_cycle, split_treatment
from .examples import bundle_examples, load_example

__version__ = "0.1.0"
