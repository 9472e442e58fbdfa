#!/usr/bin/env python3
"""
Setup script for mono3d-theory-kit

This script installs the mono3d-theory-kit package and its dependencies.
It also creates the command-line entry point for the experiment runner.
"""

from setuptools import find_packages, setup

# Read the content of README.md for the long description
with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

# Read requirements from requirements.txt
with open("requirements.txt", "r", encoding="utf-8") as f:
    requirements = [line.split("#")[0].strip() for line in f if line.strip() and not line.startswith("#")]

setup(
    name="mono3d-theory-kit",
    version="0.1.0",
    description=(
        "Numerical library and experiment CLI for grouped differentiable NMS, 3D box overlap, "
        "loss convergence, ground-plane depth and scale-equivariant filters"
    ),
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*", "docs", "examples", "examples.*"]),
    py_modules=["run_experiment"],
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Image Recognition",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
    ],
    python_requires=">=3.10",
    install_requires=requirements,
    entry_points={
        "console_scripts": [
            "mono3d-run=run_experiment:main",
        ],
    },
    include_package_data=True,
    package_data={
        "": ["*.json", "*.md"],
    },
    zip_safe=False,
)
