# Core module - errors and file formats
