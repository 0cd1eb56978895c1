# pci.core — foundational infrastructure (paths, settings, logging, errors)
