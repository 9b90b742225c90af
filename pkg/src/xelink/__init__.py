"""Cross-lingual entity linking toolkit.

Pipeline stages: anchor-corpus statistics, candidate generation with
calibrated score fusion, feature extraction, and two collective
disambiguators (a linear greedy baseline and an iterative belief-update
network trained end to end).
"""

__version__ = "0.1.0"

from xelink.corpus import Document, Mention, read_corpus, write_corpus, write_linked
from xelink.kbstats import AnchorPage, KbStatistics, ingest, merge

__all__ = [
    "AnchorPage",
    "Document",
    "KbStatistics",
    "Mention",
    "ingest",
    "merge",
    "read_corpus",
    "write_corpus",
    "write_linked",
    "__version__",
]
