"""cwemap: hierarchical CVE-to-CWE text classification.

Pipeline: five-stage text preprocessing, 1/2/3-gram dictionary features,
TF-IDF-initialized single-layer classifiers (one per CWE taxonomy node),
top-down multi-label inference, and fine/coarse-grain evaluation.
"""

from .errors import (
    ConfigurationError,
    CwemapError,
    FormatError,
    IntegrityError,
    ParseError,
    TrainingError,
    ValidationError,
    VersionError,
)
from .features import Dictionary, FeatureVector, build_dictionary, encode, ngram_set, ngrams
from .hierarchy import (
    FlatModel,
    HierarchicalModel,
    Prediction,
    PrepAssets,
    SelectionMode,
    TwoLayerModel,
    assemble_training_sets,
    classify,
    classify_flat,
    threshold,
    top_k,
    train_flat_baseline,
    train_hierarchy,
    train_two_layer_baseline,
)
from .ingest import (
    CveRecord,
    CweNode,
    Taxonomy,
    import_nvd_feed,
    load_cve_corpus,
    load_stopwords,
    load_synonyms,
    load_taxonomy,
    paths_to_root,
)
from .netcore import (
    AdamState,
    NodeClassifier,
    TrainConfig,
    TwoLayerClassifier,
    adam_step,
    bce_with_logits,
    forward_logits,
    forward_scores,
    gradient,
    train_node,
)
from .scoring import ClassDocument, init_weights, inverse_document_frequency, term_frequency, tfidf
from .evaluation import EvalReport, evaluate, evaluate_model, is_correct, split_corpus
from .modelstore import ModelManifest, fingerprint, load, save
from .textprep import SynonymTable, apply_synonyms, preprocess, stem, tokenize

__version__ = "0.1.0"
