#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# File              : noxfile.py
# License           : MIT license <Check LICENSE>
# Author            : strokeext-relapse developers
# Date              : 02.09.2026
# Last Modified Date: 17.10.2026

import nox

TEST_DEPS = ("pytest", "pytest-xdist", "pytest-cov", "scikit-learn", "lifelines")


@nox.session(python=["3.9", "3.10", "3.11"])
def run(session):
    session.install(*TEST_DEPS)
    session.install("-e", ".")
    session.run(
        "pytest",
        "--cov=strokeext",
        "--cov-branch",
        "--cov-report=xml",
        "-rP",
        "-n",
        "auto",
        "-m",
        "not slow",
        *session.posargs
    )


@nox.session(python=["3.10"])
def acceptance(session):
    session.install(*TEST_DEPS)
    session.install("-e", ".")
    session.run("pytest", "-rP", "-n", "auto", "-m", "slow", *session.posargs)


@nox.session(python=["3.9", "3.10"])
def lint(session):
    session.install("flake8")
    session.run("flake8")
