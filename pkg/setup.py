#!/usr/bin/env python

import setuptools

if __name__ == "__main__":
    setuptools.setup(use_scm_version={"write_to": "pyebh/version.py", "fallback_version": "0.1.0"})
