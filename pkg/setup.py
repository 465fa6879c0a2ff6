import setuptools
from pair_evolve.version import VERSION_STRING

readmeFile = open("README.md", "r")
longDescription = readmeFile.read()
readmeFile.close()

setuptools.setup(
    name="pair_evolve",
    version=VERSION_STRING,
    description="Gradient-free neuroevolution of a two-branch image-pair classifier.",
    long_description=longDescription,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(),
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: BSD License",
        "Development Status :: 3 - Alpha",

        "Operating System :: OS Independent",

        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",

        "Environment :: Console"
    ],
    keywords=['neuroevolution', 'evolution strategies', 'cnn', 'image pairs', 'cli'],
    install_requires=[
        "numpy>=1.22",
        "numba>=0.56",
        "scipy>=1.8"
    ],
    extras_require={
        "test": [ "pytest>=7" ]
    },
    entry_points={
        "console_scripts": [
            "pevolve = pair_evolve.cli:main"
        ]
    },
    python_requires=">=3.8"
)
