import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="drlr-solver",
    version="0.1.0",
    description="First-order solver for Wasserstein distributionally robust logistic regression",
    long_description=long_description,
    long_description_content_type="text/markdown",
    keywords="distributionally robust optimization logistic regression ADMM",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.8",
    packages=setuptools.find_packages(exclude=["tests"]),
    package_data={"drlr": ["parameters/*.csv"]},
    install_requires=["numpy>=1.17", "pandas>=1.0", "scipy>=1.4", "openpyxl>=3.0"],
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["drlr=drlr.cli:main"]},
)
