"""Human-in-the-loop synthesis of block-structured process models.

The pipeline turns a natural-language process description into a BPMN model
through inspectable intermediate artifacts: execution paths, an ordering
relations graph, a modular decomposition tree with loop annotations, and the
synthesized model. Every LLM-assisted step can be overridden by an analyst.
"""

__version__ = "0.1.0"
