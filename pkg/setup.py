#!/usr/bin/env python3
import codecs
import os

from setuptools import setup, find_packages

with open(r"README.md", encoding="utf8") as f:
    long_description = f.read()


def read(rel_path):
    here = os.path.abspath(os.path.dirname(__file__))
    with codecs.open(os.path.join(here, rel_path), "r") as fp:
        return fp.read()


def get_version(rel_path):
    for line in read(rel_path).splitlines():
        if line.startswith("__version__"):
            delim = '"' if '"' in line else "'"
            return line.split(delim)[1]
    raise RuntimeError("Unable to find version string.")


# please also update requirements.txt for testing. Make sure package versions are the same in each subset.
extras_require = {
    "solver": [
        "numpy",
        "pydantic>=2.0",
        "scipy>=1.6",
    ],
    "verify": [
        "numpy",
        "pydantic>=2.0",
        "scipy>=1.6",
        "pandas",
        "tqdm",
    ],
}
extras_require["complete"] = sorted(set([v for req in extras_require.values() for v in req]))

extras_require["dev"] = sorted(
    extras_require["complete"]
    + [
        "sphinx>=1.3",
        "sphinx_rtd_theme",
    ]
)

setup(
    name="cmbx",
    version=get_version(os.path.join("cmbx", "__init__.py")),
    license="Apache 2.0",
    description="conic mixed-binary sets: polymatroid cuts, convex hull checks and exact solvers",
    zip_safe=False,
    packages=find_packages(exclude=["tests"]),
    install_requires=[],
    extras_require=extras_require,
    entry_points={"console_scripts": ["cmbx=cmbx.cli:main"]},
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
        "Development Status :: 3 - Alpha",
        "License :: OSI Approved :: Apache Software License",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.9",
    long_description=long_description,
    long_description_content_type="text/markdown",
)
