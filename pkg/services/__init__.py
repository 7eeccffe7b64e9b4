# Services module for bratteli-spectra
