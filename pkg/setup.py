# setup.py
from setuptools import setup, find_packages

setup(
    name="laplacian-inference",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        "numpy>=1.22.0",
        "scipy>=1.8.0",
        "networkx>=2.6",
        "pandas>=1.5.0",
        "pyyaml>=5.4",
    ],
    extras_require={
        "test": ["pytest>=6.0.0"],
    },
    entry_points={
        "console_scripts": [
            "lapinfer=lapinfer.cli:main",
        ],
    },
    author="Your Name",
    author_email="your.email@example.com",
    description="Hypothesis tests on samples of networks through their graph Laplacians",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    url="https://github.com/yourusername/laplacian-inference",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
    python_requires=">=3.8",
)
