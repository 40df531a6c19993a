"""Crowdsourced Diagnostic Rhyme Test harness.

Subpackages cover the full study lifecycle: word-list and manifest
ingestion (corpus), audio curation and treatment conditions (audiopipe),
balanced block construction (blocks), the participant protocol (session),
guessing-adjusted scoring and statistics (scoring), synthetic panels
(simulator), the HTTP service (service) and the researcher CLI (cli).
"""

__version__ = "0.1.0"
