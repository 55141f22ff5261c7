"""Semi-supervised morphological inflection: a three-factor generative model of tagged
sentences (tag LM, lemma generator, inflector) and a CRF tagger-lemmatizer, trained
jointly by wake-sleep."""

__version__ = "0.1.0"
