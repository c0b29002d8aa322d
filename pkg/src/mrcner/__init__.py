"""Named entity recognition as machine reading comprehension.

Each entity type becomes a natural-language query; entities are the answer
spans found by per-token start/end classifiers and a start-end matching
classifier. Flat and nested NER use the same machinery.
"""

__version__ = "0.1.0"
