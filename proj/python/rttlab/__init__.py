from ._core import (
    LstmArchitecture,
    LstmModel,
    RttTrace,
    RttlabError,
    TrainConfig,
    dtw,
    evaluate_accuracy,
    evaluate_model,
    fine_tune,
    generate,
    load_model,
    parse_trace,
    pearson,
    percentile,
    run_emulation,
    save_model,
    serialize_trace,
    smape,
    smape_improvement,
    standardize,
    train_specialized,
)

__all__ = [
    "LstmArchitecture",
    "LstmModel",
    "RttTrace",
    "RttlabError",
    "TrainConfig",
    "dtw",
    "evaluate_accuracy",
    "evaluate_model",
    "fine_tune",
    "generate",
    "load_model",
    "parse_trace",
    "pearson",
    "percentile",
    "run_emulation",
    "save_model",
    "serialize_trace",
    "smape",
    "smape_improvement",
    "standardize",
    "train_specialized",
]
