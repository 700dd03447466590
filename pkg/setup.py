from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="cartan-dmft",
    version="1.0.0",
    author="Yonatan Kramer",
    author_email="",
    description="Cartan fast-forwarded two-site DMFT with simulated noisy Green's-function measurement",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    install_requires=[
        "numpy>=1.22.0",
        "scipy>=1.8.0",
        "setuptools>=45.0.0",
        "tinydb>=4.7.0",
    ],
    python_requires=">=3.8",
    entry_points={
        "console_scripts": [
            "cartan-dmft=cartan_dmft.cli:main",
        ],
    },
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    keywords="dmft cartan decomposition quantum circuit green's function mott transition trotter",
)
