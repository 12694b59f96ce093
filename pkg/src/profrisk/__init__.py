"""Proficient-code versus complexity-risk analysis for Python sources."""

__version__ = "0.1.0"

from .complexity import ComplexityBlock, Rank, analyze_file_complexity, cyclomatic_complexity, rank_of
from .join import InconsistentInput, JoinedCase, JoinResult, category_of, join_cases
from .proficiency import (
    CompetencyLevel,
    ConstructRegistry,
    ProficiencyOccurrence,
    RegistryError,
    classify_constructs,
    default_registry,
    filter_by_level,
)
from .report import (
    CategoryMatrix,
    ClassTableRow,
    ProjectOverviewRow,
    association_score,
    category_matrix,
    project_overview,
    top_classes,
)
from .syntax import BlockSpan, ParseError, SyntaxTree, enumerate_blocks, parse_source

__all__ = [
    "BlockSpan",
    "CategoryMatrix",
    "ClassTableRow",
    "CompetencyLevel",
    "ComplexityBlock",
    "ConstructRegistry",
    "InconsistentInput",
    "JoinResult",
    "JoinedCase",
    "ParseError",
    "ProficiencyOccurrence",
    "ProjectOverviewRow",
    "Rank",
    "RegistryError",
    "SyntaxTree",
    "analyze_file_complexity",
    "association_score",
    "category_matrix",
    "category_of",
    "classify_constructs",
    "cyclomatic_complexity",
    "default_registry",
    "enumerate_blocks",
    "filter_by_level",
    "join_cases",
    "parse_source",
    "project_overview",
    "rank_of",
    "top_classes",
]
