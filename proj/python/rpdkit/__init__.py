"""Word-substitution attacks, adversarial detection and reactive repair for
linear text classifiers."""

from ._core import (  # noqa: F401
    AdversaryRecord,
    AttackOutcome,
    AugmentedExample,
    CorpusSpec,
    Dataset,
    DefenseTrace,
    EvalPartition,
    FeatureConfig,
    GeneratedCorpus,
    Model,
    Sentence,
    SynonymLexicon,
    TrainConfig,
    attack,
    build_partition,
    construct_detection_dataset,
    defend,
    detect,
    evaluate_defense,
    generate_corpus,
    load_dataset,
    load_model,
    sample_adversaries,
    save_dataset_jsonl,
    save_model,
    tokenize,
    train_joint,
    train_victim,
)

__version__ = "0.1.0"
