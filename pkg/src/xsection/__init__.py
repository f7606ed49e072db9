"""Finite models of cross-sections of amenable group actions.

Modules
-------
group     group models, Følner boxes, invariance and separation tests
tiling    greedy and multi-scale quasi-tilings with precondition checkers
section   cross-section samples, castles and empirical ergodic theorems
entropy   ball covers, castle entropy, block entropy, Abramov and transfer checks
systems   Bernoulli, Markov, suspension and induced symbolic systems
mixing    joint entropy of separated families and the mixing defect
cli       command-line front end
"""

__version__ = "0.1.0"
