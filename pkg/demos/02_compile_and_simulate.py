"""Compile a conditional task (fetch an employee for a meeting) and simulate
both branches: one run where the employee is ready, one where they are not.

    python demos/02_compile_and_simulate.py
"""

from importlib import resources

from robomap.compiler import compile_step_texts, count_commands, serialize_ir
from robomap.sim import Reply, WakeUttered, default_map, execute


def main():
    text = resources.files("robomap").joinpath("data/tasks/h2_employee_gathering.steps").read_text("utf-8")
    steps = [line.strip() for line in text.splitlines() if line.strip()]
    program = compile_step_texts(steps)
    print(f"compiled {count_commands(program)} robot commands:\n")
    print(serialize_ir(program))

    geometry = default_map()
    runs = {
        "employee ready": ["Riley", "employee office", "yes, ready"],
        "employee needs time": ["Riley", "employee office", "no", "ten minutes"],
    }
    for title, replies in runs.items():
        events = [WakeUttered("gather employees", 0.0)]
        events += [Reply(text, 0.0) for text in replies]
        trace = execute(program, geometry, events)
        print(f"--- {title} ---")
        for entry in trace:
            print(f"  t={entry.t:7.3f}  {entry}")
        print()


if __name__ == "__main__":
    main()
