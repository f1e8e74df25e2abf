from setuptools import setup


packages = [
    'nusrec',
]

setup(
    name='nusrec',
    version='1.0.0',
    description='Reconstruction of bandlimited signals from nonuniform generalized samples',
    packages=packages,
    include_package_data=False,
    python_requires='>=3.10',
    install_requires=["tomli; python_version < '3.11'"],
    entry_points={
        'console_scripts': [
            'nusrec = nusrec.cli:main',
        ],
    }
)
