from spheroll.cli import run

run()
