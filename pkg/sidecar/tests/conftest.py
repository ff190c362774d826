import pytest

_WHOLE_WORDS = [
    "bon", "##jour", "le", "la", "les", "un", "une", "et", "est", "il",
    "elle", "nous", "vous", "témoin", "avocat", "président", "commission",
    "audience", "monsieur", "madame", "merci", "oui", "non", "pour", "dans",
    "demain", "matin", "heures", "dossier", "pièces", "votre", "pouvez",
    "qu", "n", "l", "d", "s", "j", "c", "m",
]

_CHARS = list("abcdefghijklmnopqrstuvwxyz") + list("àâçèéêëîïôùûü'-,.?!")


def _vocab() -> list[str]:
    pieces = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    pieces += _WHOLE_WORDS
    for ch in _CHARS:
        pieces.append(ch)
        pieces.append("##" + ch)
    # keep entries unique while preserving order
    seen = set()
    out = []
    for piece in pieces:
        if piece not in seen:
            seen.add(piece)
            out.append(piece)
    return out


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory) -> str:
    """A tiny randomly initialized BERT saved locally: real tokenizer,
    real sub-token behavior, no downloads."""
    import torch
    from transformers import BertConfig, BertModel, BertTokenizer

    path = tmp_path_factory.mktemp("tiny-encoder")
    vocab = _vocab()
    tokenizer = BertTokenizer(vocab={piece: i for i, piece in enumerate(vocab)},
                              do_lower_case=True, strip_accents=False)
    tokenizer.save_pretrained(path)

    torch.manual_seed(20_250_810)
    config = BertConfig(
        vocab_size=len(vocab), hidden_size=32, num_hidden_layers=2,
        num_attention_heads=2, intermediate_size=64,
        max_position_embeddings=512)
    BertModel(config).save_pretrained(path)
    return str(path)
