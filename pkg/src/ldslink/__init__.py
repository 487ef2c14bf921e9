"""Entity disambiguation by limited discrepancy search.

A trained local scorer assigns each mention its best knowledge-base
candidate; a beam search over small correction sets, with coherence-based
propagation, confidence heuristics and a rank-trained pruner, then improves
the joint solution.
"""

__version__ = "0.1.0"
