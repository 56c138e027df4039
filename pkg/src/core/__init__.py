"""
Numerical core of the SuperMAN toolkit.

- diffcore: tensors, reverse-mode gradients, MLPs and Adam
- signal_graphs: measurement records, signal graphs, groupings and partitions
- extgnan: the per-subset additive graph encoder
- superman: the full model and its readout
- training / metrics: fitting and evaluation
- interpret: contributions and perturbation analyses
- treemetric: four-point checks and path reconstruction
- synth: synthetic datasets
"""
