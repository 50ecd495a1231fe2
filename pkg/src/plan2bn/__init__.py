"""Compile PRS-style plan libraries into belief networks for plan recognition."""
from .bayes_net import (ArcKind, BeliefNetwork, Evidence, posterior_by_elimination,
                        posterior_by_enumeration)
from .compiler import (CompileOptions, CptOverlay, VariableMap, compile_library,
                       dump_network, load_network)
from .plan_model import PlanLibrary, parse_plan_file, pretty_print, validate_library
from .recognition import Observation, RecognitionSession, new_session

__all__ = [
    "ArcKind", "BeliefNetwork", "Evidence", "posterior_by_elimination",
    "posterior_by_enumeration", "CompileOptions", "CptOverlay", "VariableMap",
    "compile_library", "dump_network", "load_network", "PlanLibrary",
    "parse_plan_file", "pretty_print", "validate_library", "Observation",
    "RecognitionSession", "new_session",
]
