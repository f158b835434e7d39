"""Integration tests.

Optional settings for the end-to-end runs, such as CTCB_THREADS and CTCB_LOG_LEVEL, are read from
pytest.env (see misc/pytest.env.template) unless already set in the environment.
"""
from dotenv import load_dotenv

load_dotenv("pytest.env", override=False)
