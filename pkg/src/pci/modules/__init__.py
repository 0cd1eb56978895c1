# pci.modules — numerical layers (special functions, orbitals, kernels, series engine, oracles)
