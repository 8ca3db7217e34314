"""kgforge: build a drug knowledge graph from leaflet documents.

Pipeline stages: scrape -> parse -> extract -> vote -> build, plus
analytics, evaluation reports, an LLM judge, and an annotation service.
"""

__version__ = "0.1.0"
