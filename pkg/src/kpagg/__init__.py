"""Zero-shot keyphrase generation harness.

Samples keyphrase lists from chat-completion endpoints, aggregates the
samples by perplexity-aware strategies, and evaluates present/absent
keyphrases with stemming-normalized F1 and recall metrics.
"""

__version__ = "0.1.0"
