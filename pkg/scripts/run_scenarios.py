#!/usr/bin/env python3
"""Run the scripted walkthroughs and print narrative, chain, and totals.

Both scenarios are deterministic, so the output of two runs is identical;
pipe it to a file and diff if you want to see that for yourself.
"""

import sys

from coaatchain.scenarios import run_scenario, scenario_names


def main() -> None:
    names = sys.argv[1:] or scenario_names()
    for name in names:
        result = run_scenario(name)
        print(f"== {name} ==")
        for line in result.narrative:
            print(f"  {line}")
        print("chain:")
        for line in result.dump:
            print(f"  {line}")
        print(f"state root: {result.state_root}")
        print(f"total fees: {result.total_fee_bnb} BNB ({result.total_fee_usd} USD)")
        print()


if __name__ == "__main__":
    main()
