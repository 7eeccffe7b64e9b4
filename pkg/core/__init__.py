# Core module for bratteli-spectra
