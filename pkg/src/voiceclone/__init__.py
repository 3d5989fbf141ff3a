"""voiceclone: clone a telesales voice agent from call transcripts.

Pipeline modules: corpus ingestion, cloning (sampling, ranking,
extraction, composition), the nine-section playbook with its renderer and
lints, a realtime websocket gateway with pluggable speech adapters, and a
blind evaluation harness with score aggregation.
"""

__version__ = "0.1.0"
