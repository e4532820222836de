"""Hierarchical multi-task learning toolkit for semantic NLP tasks.

Jointly trains named entity recognition, entity mention detection,
coreference resolution and relation extraction with shared embeddings and
stacked bidirectional recurrent encoders wired with shortcut connections.
"""

__version__ = "0.1.0"

from hmtl.data import Document, RelationInstance, TaggedSpan

__all__ = ["Document", "RelationInstance", "TaggedSpan", "__version__"]
