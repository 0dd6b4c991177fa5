"""robomap: dialogue-driven service-robot task customization with generated
map visual aids.

Subpackages by responsibility:

- domain    shared vocabulary (places, colors, draw commands, phases)
- draw      drawing-script parser, task-flow diffing, animation frames, SVG
- compiler  constrained-English steps -> robot program IR, validator, counter
- sim       deterministic discrete-event robot simulator
- dialogue  per-turn orchestration against a scripted or live provider
- gateway   WebSocket wire schema, sessions, persistence, scenario loading
- cli       serve / replay / render / compile / simulate commands
"""

__version__ = "0.1.0"
