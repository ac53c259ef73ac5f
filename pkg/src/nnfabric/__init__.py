"""nnfabric: desk-scale neural-network training services.

Publishable paradigm descriptors, query-defined datastreams, train /
retrain / evaluate jobs on an affinity-tagged worker pool, a keyed
archive with lineage, and a session-managed REST gateway with metering.
"""

__version__ = "0.1.0"
