"""Compatibility setup.py for older setuptools/pip editable installs."""

from __future__ import annotations

from pathlib import Path

from setuptools import find_packages, setup

ROOT = Path(__file__).resolve().parent
README = (ROOT / "README.md").read_text(encoding="utf-8")

about: dict[str, str] = {}
exec((ROOT / "steamflex" / "__init__.py").read_text(encoding="utf-8"), about)

setup(
    name="steamflex",
    version=about["__version__"],
    description="Dispatch and sizing optimization for electrode boiler, steam accumulator and battery systems",
    long_description=README,
    long_description_content_type="text/markdown",
    python_requires=">=3.9",
    packages=find_packages(include=["steamflex", "steamflex.*"]),
    include_package_data=True,
    package_data={"steamflex": ["data/*.yaml"]},
    install_requires=[
        "pyyaml>=6.0",
        "numpy>=1.22",
        "scipy>=1.9",
        "pandas>=1.5",
        "numpy-financial>=1.0",
    ],
    entry_points={
        "console_scripts": [
            "steamflex=steamflex.cli:main",
        ]
    },
)
