"""oncotwin: a dual digital-twin engine for sequential cancer-treatment decisions.

The package simulates patient response to a three-stage therapy sequence
(induction chemotherapy, concurrent chemoradiation, neck dissection),
trains a twin of the treating physician's decision policy, and serves
explainable what-if queries over HTTP for a companion UI.
"""

__version__ = "0.1.0"
