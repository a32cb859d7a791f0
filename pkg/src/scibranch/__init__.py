"""Corpus branch analytics: co-cluster a publication corpus into
theoretical and applied branches, characterize them with significant
keywords and quantify temporal, geographic and citation dynamics."""

__version__ = "0.1.0"

from .coclustering import (  # noqa: F401
    BranchLabeling,
    CoPartition,
    best_fit,
    coclus_fit,
    merge_to_branches,
    modularity,
    partition_agreement,
    scan_k,
)
from .credit import aggregate_shares, compute_ledger, paper_credit  # noqa: F401
from .dependency import (  # noqa: F401
    DependencyConfig,
    DependencyScore,
    direct_dependency,
    group_average,
    propagate,
)
from .errors import (  # noqa: F401
    ConfigError,
    DataError,
    PipelineError,
    ScibranchError,
)
from .keywords import cluster_word_stats, top_keywords, zscore  # noqa: F401
from .records import (  # noqa: F401
    Corpus,
    Record,
    RegionMap,
    build_citation_graph,
    filter_corpus,
    parse_records,
)
from .report import PipelineConfig, run_pipeline, yearly_trend  # noqa: F401
from .text import (  # noqa: F401
    DocTermMatrix,
    TokenPipelineConfig,
    Vocabulary,
    build_matrix,
    build_vocabulary,
    tokenize,
)
