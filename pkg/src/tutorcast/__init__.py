"""tutorcast: event-sourced authoring and replay of programming tutorials.

Recordings are timestamped text artifacts plus an audio track; playback
reconstructs the author's actions deterministically at any timeline
position. The package also ships sandboxed code execution, artifact
search with contextual help, a persistence layer, the HTTP service tying
it together, and a load-test harness for the service.
"""

__version__ = "0.1.0"
