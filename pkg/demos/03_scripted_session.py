"""Drive the bundled visitor-reception scenario through the gateway and dump
the full wire stream, exactly as a WebSocket client would see it.

    python demos/03_scripted_session.py
"""

from robomap.gateway import Gateway, bundled_scenario, canonical_json

UTTERANCES = [
    "Hello, I would like to develop a visitor reception service.",
    "Then lead them to the employee office area and the creation studio.",
    "I want to modify it. After the employee office area, lead them to the living room instead.",
    "That's all, I have finished describing the task.",
    "Yes, that's correct.",
]


def main():
    gateway = Gateway(lambda: bundled_scenario("visitor_reception").provider())
    seq = 0

    def send(mtype, **payload):
        nonlocal seq
        seq += 1
        msg = {"type": mtype, "session": "demo", "seq": seq, "payload": payload}
        print(f">>> {canonical_json(msg)}")
        for out in gateway.handle_message(msg):
            line = canonical_json(out)
            if len(line) > 160:
                line = line[:157] + "..."
            print(f"<<< {line}")
        print()

    send("new_session")
    for text in UTTERANCES:
        send("utterance", text=text)
    send("deploy")
    send("test_enter")
    send("sim_event", kind="wake", keyword="visitor reception")
    send("test_exit")


if __name__ == "__main__":
    main()
