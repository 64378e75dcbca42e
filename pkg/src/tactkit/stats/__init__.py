from tactkit.stats.distributions import betainc, f_upper_p, t_two_sided_p
from tactkit.stats.effects import (
    AnovaResult,
    ControlNoiseTable,
    RankValidationResult,
    control_by_noise,
    interaction_table,
    kendall_tau,
    main_effects,
    one_way_anova,
)
from tactkit.stats.regression import (
    Coding,
    OptimumResult,
    RegressionModel,
    Term,
    backward_eliminate,
    fit_regression,
    parse_term,
    predict,
    predict_optimum,
    quadratic_terms,
)
from tactkit.stats.snr import normalize_responses, snr_larger_better
