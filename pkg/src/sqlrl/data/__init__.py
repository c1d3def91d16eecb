"""Datasets, schema rendering, prompts and the mutation corpus."""

from .dataset import (
    DIFFICULTIES,
    DatasetError,
    DatasetExample,
    load_dataset,
    load_filtered_schema,
    resolve_databases,
)
from .mutation import KINDS as MUTATION_KINDS
from .mutation import MutationSpec, mutate
from .rendering import (
    SchemaRendering,
    build_generation_prompt,
    render_schema,
    union_with_gold_schema,
)

__all__ = [
    "DIFFICULTIES", "DatasetError", "DatasetExample", "MUTATION_KINDS", "MutationSpec",
    "SchemaRendering", "build_generation_prompt", "load_dataset", "load_filtered_schema",
    "mutate", "render_schema", "resolve_databases", "union_with_gold_schema",
]
