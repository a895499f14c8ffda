# -*- coding: utf-8 -*-
from setuptools import setup, find_packages
from os import path

here = path.abspath(path.dirname(__file__))
# Get the long description from the README file
with open(path.join(here, 'README.md'), encoding='utf-8') as f:
    long_description = f.read()

# version_nr contains ... well ... the version in the form  __version__ = '0.1.0'
version_nr = {}
with open(path.join(here, 'xumeval/version.py'), encoding='utf-8') as f_v:
    exec(f_v.read(), version_nr)

# --- read requirements.txt, remove comments and empty lines
with open(path.join(here, 'requirements.txt'), encoding='utf-8') as f_r:
    requirements_list = [r.strip() for r in f_r.read().strip().split("\n")
                         if r.strip() and not r.strip().startswith('#')]

print("Installing packages\n{0}\n".format(requirements_list))

setup(
    name = 'xumeval',
    version = version_nr['__version__'],
    description = 'xumeval evaluates cross-modal video summaries: frame selections, text summaries and their alignment.',
    long_description_content_type='text/markdown',
    long_description = long_description,
    keywords = ["video summarization", "evaluation", "metrics", "CLIP", "BLEU",
                "CIDEr", "temporal tokens"],
    license = 'MIT',
    platforms = ['any'],
    python_requires = '>=3.8',
    install_requires = requirements_list,
    extras_require = {'test': ['pytest']},

     # See https://pypi.python.org/pypi?%3Aaction=list_classifiers
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
    ],
    packages = find_packages(exclude=('contrib', 'docs')),
    # Read information from MANIFEST.in
    include_package_data = True,
    # config templates are copied to the user directory at the first start
    package_data={'xumeval': ['xumeval_template.conf', 'xumeval_log_template.conf']},

    # link the executable xumevalx to the python function main() in the
    # xumevalx module
    entry_points = {
        'console_scripts': [
            'xumevalx = xumeval.xumevalx:main',
        ]
    }
)

"""
A "xumevalx" script is installed that imports "main" from xumevalx.py.
main() is called with no arguments, and the return value is passed to
sys.exit(), i.e. it becomes the exit code (0, 1 or 2).
"""
