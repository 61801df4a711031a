from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="sst-graph-forecast",
    version="0.1.0",
    author="Your Name",
    author_email="your.email@example.com",
    description="Static and dynamic learnable graph forecasting for sea surface temperature",
    long_description=long_description,
    long_description_content_type="text/markdown",
    url="https://github.com/yourusername/sst-graph-forecast",
    packages=find_packages(exclude=["tests", "examples", "examples.*"]),
    py_modules=["main"],
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
    ],
    python_requires=">=3.9",
    install_requires=[
        "torch>=2.1.0",
        "numpy>=1.26.0",
        "pandas>=2.1.0",
        "matplotlib>=3.8.0",
        "pydantic>=2.11.3",
        "jsonschema>=4.23.0",
        "python-dotenv>=1.1.0",
        "rich>=14.0.0",
        "typer>=0.15.2",
    ],
    extras_require={
        "dev": [
            "pytest>=7.0.0",
            "black>=23.0.0",
            "isort>=5.12.0",
            "mypy>=1.0.0",
            "flake8>=6.0.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "sdlpgc=main:main",
        ],
    },
    package_data={
        "src": [
            "../config/*",
        ],
    },
    include_package_data=True,
)
