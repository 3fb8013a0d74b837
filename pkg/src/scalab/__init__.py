"""Exact-arithmetic laboratory for one-dimensional stochastic cellular
automata: one rule table, three dynamics (deterministic, non-deterministic,
stochastic), and decision procedures with witnesses for all of them."""

from .core import (Alphabet, Budget, DEFAULT_BUDGET, ConservationVerdict,
                   FormatError, NotCfca, NotDeterministic, PeriodicConfig,
                   ResourceExhausted, Sca, ScaError, SpaceTime, Word,
                   WordDistribution, apply_window, canonicalize,
                   conservation_check, cylinder_prob, estimate_cylinder_prob,
                   is_cfca, is_deterministic, iterate_sca, local_distribution,
                   make_sca, parse_sca, pushforward_distribution,
                   sample_diagram, step_periodic, to_document, trim_unused,
                   word)
from .weighted import (PairWord, Precheck, WeightedAutomaton, cfca_weighted,
                       encode_pair_word, prime_factor_precheck,
                       stochastic_equal, wa_equivalent, weight_of,
                       weighted_debruijn)
from .symbolic import (Verdict, cfca_noisy_local, forced_pattern_exists,
                       is_injective, is_noisy, is_preinjective, is_surjective,
                       ndet_equal, reachable_pattern_exists)
from .ppt_pfa import (ExponentialThreshold, LoopWitness, Pfa, PptResult,
                      SuperexponentialThreshold, encode_pfa, make_pfa,
                      parse_pfa, pfa_accept_prob, ppt_decide_cfca,
                      ppt_decide_sca)
from .simulation import (CompatibilityError, CouplingInfeasible, CouplingTable,
                         Injection, NotFoundWithinBounds, RescaleParams,
                         SearchBounds, SimulationWitness, StabilityError,
                         Surjection, build_finite_coupling, cfca_host,
                         check_projection, check_restriction, gadget,
                         pack_word, rescale_sca, search_simulation, simulates,
                         unpack_word)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
