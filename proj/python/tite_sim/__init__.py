from ._core import (
    BlrmParams,
    ConfigError,
    CyclePlan,
    DataError,
    DoseGrid,
    Method,
    PatientRecord,
    TteParams,
    blrm_dlt_probability,
    cloglog,
    event_probabilities,
    fit,
    inv_cloglog,
    inv_logit,
    log_likelihood_blrm,
    log_likelihood_tte,
    logit,
    prior_summary,
    quadrature_oracle,
    run_trial,
    simulate,
)

__all__ = [
    "BlrmParams",
    "ConfigError",
    "CyclePlan",
    "DataError",
    "DoseGrid",
    "Method",
    "PatientRecord",
    "TteParams",
    "blrm_dlt_probability",
    "cloglog",
    "event_probabilities",
    "fit",
    "inv_cloglog",
    "inv_logit",
    "log_likelihood_blrm",
    "log_likelihood_tte",
    "logit",
    "prior_summary",
    "quadrature_oracle",
    "run_trial",
    "simulate",
]
