from setuptools import setup, find_namespace_packages
import codecs
import os
from strokeext.relapse.version import __version__

DESCRIPTION = "Stroke relapse prediction on synthetic multimodal cohorts"
LONG_DESCRIPTION = "Late-fusion 3D CNN + tabular models, threshold sweeps and interpretation"

here = os.path.abspath(os.path.dirname(__file__))
with codecs.open(os.path.join(here, "README.md"), encoding="utf-8") as fh:
    long_description = "\n" + fh.read()

# Setting up
setup(
    name="strokeext-relapse",
    packages=find_namespace_packages(include=["strokeext.*"]),
    version=__version__,
    author="strokeext-relapse developers",
    license="MIT",
    description=DESCRIPTION,
    long_description_content_type="text/markdown",
    long_description=long_description,
    include_package_data=False,
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.21",
        "scipy>=1.7",
        "torch>=1.12",
        "pandas>=1.4",
        "PyYAML>=5.4",
    ],
    extras_require={
        "test": [
            "pytest",
            "pytest-xdist",
            "pytest-cov",
            "scikit-learn",
            "lifelines",
        ],
    },
    entry_points={
        "console_scripts": ["strokeext-relapse=strokeext.relapse.relapse_cli:main"],
    },
    keywords=["stroke", "survival", "multimodal", "3d-cnn", "interpretability"],
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Medical Science Apps.",
    ],
)
