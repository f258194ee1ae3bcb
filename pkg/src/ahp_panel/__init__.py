"""AHP with a panel of virtual experts: elicit, compare, aggregate, decide."""

from .matrices import (
    PairwiseMatrix,
    PriorityVector,
    ConsistencyReport,
    validate_pairwise,
    aggregate,
    normalize_columns,
    priority_vector,
    lambda_max,
    consistency,
    random_index,
    load_matrix_csv,
    dump_matrix_csv,
)
from .hierarchy import (
    HierarchyTree,
    CriterionNode,
    AlternativeScores,
    validate_tree,
    global_leaf_priorities,
    score_alternatives,
    export_tree,
)
from .elicitation import (
    Candidate,
    CandidatePool,
    ScoreBallot,
    TallyResult,
    normalize_label,
    dedupe,
    tally,
    select_top_n,
)

__version__ = "0.1.0"

__all__ = [
    "PairwiseMatrix", "PriorityVector", "ConsistencyReport",
    "validate_pairwise", "aggregate", "normalize_columns", "priority_vector",
    "lambda_max", "consistency", "random_index", "load_matrix_csv", "dump_matrix_csv",
    "HierarchyTree", "CriterionNode", "AlternativeScores", "validate_tree",
    "global_leaf_priorities", "score_alternatives", "export_tree",
    "Candidate", "CandidatePool", "ScoreBallot", "TallyResult",
    "normalize_label", "dedupe", "tally", "select_top_n",
    "__version__",
]
