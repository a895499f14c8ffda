# -*- coding: utf-8 -*-
#
# This file is part of the xumeval project
#
# Copyright © xumeval Project Contributors
# Licensed under the terms of the MIT License
# (see file LICENSE in root directory for details)

"""
Read the configuration file and merge its entries into the global parameter
dict ``xumeval_rc.params``.
"""
import os
import configparser

import logging
logger = logging.getLogger(__name__)

import xumeval.xumeval_rc as rc
import xumeval.libs.xum_dirs as dirs

REQ_VERSION = 1 #: required version of the config file

_TRUE = {'1', 'yes', 'true', 'on'}
_FALSE = {'0', 'no', 'false', 'off'}

#------------------------------------------------------------------------------
def _convert(raw, default):
    """
    Convert the string `raw` read from the config file to the type of
    `default`. Raise ValueError when this is not possible.
    """
    val = raw.strip(' \t\n\r"\'')
    if isinstance(default, bool): # test before int, bool is a subclass of int
        if val.lower() in _TRUE:
            return True
        elif val.lower() in _FALSE:
            return False
        raise ValueError("'{0}' is not a boolean".format(val))
    elif isinstance(default, int):
        return int(val)
    elif isinstance(default, float):
        return float(val)
    elif isinstance(default, list):
        return [v.strip() for v in val.split(',') if v.strip()]
    else:
        return val

#------------------------------------------------------------------------------
class ConfReader(object):
    """
    Parse the config file (by default ``dirs.USER_CONF_DIR_FILE``) with a
    :class:`configparser.ConfigParser` and update ``rc.params`` section by
    section. Unknown sections and keys are reported and ignored, malformed
    values are reported and replaced by the defaults.
    """

    def __init__(self, conf_file=None):
        self.conf_file = conf_file or dirs.USER_CONF_DIR_FILE
        # preserve case of parsed options, allow keys without value and
        # interpolation across sections, ${Provider:url}
        self.conf = configparser.ConfigParser(
            allow_no_value=True,
            interpolation=configparser.ExtendedInterpolation())
        self.conf.optionxform = str

    #--------------------------------------------------------------------------
    def read_conf_version(self):
        """
        Try to read out the version of the config file, if the version
        number cannot be read or is not equal to the required number,
        return False.
        """
        try:
            conf_ver = int(self.conf['Common']['version'])
            if conf_ver != REQ_VERSION:
                logger.error("User config file\n\t'{conf_file:s}'\n\thas the wrong version '{conf_ver}' "
                             "(required: '{req_version}'), using defaults."
                             .format(conf_file=self.conf_file, conf_ver=conf_ver,
                                     req_version=REQ_VERSION))
                return False
        except KeyError:
            logger.error("No entry 'version' in {0}, using defaults.".format(self.conf_file))
            return False
        except (ValueError, TypeError):
            logger.error("No suitable value for 'version' in {0}, using defaults."
                         .format(self.conf_file))
            return False
        return True

    #--------------------------------------------------------------------------
    def parse_conf_section(self, section):
        """
        Parse ``section`` of the config file and return a dict with the
        converted entries that exist in ``rc.params[section]``.

        Parameters
        ----------
        section : str
            name of the section to be parsed

        Returns
        -------
        section_conf_dict : dict
            keys of the config file and correspondingly typed values
        """
        section_conf_dict = {}
        defaults = rc.params[section]
        for key, raw in self.conf.items(section):
            if key not in defaults:
                logger.warning("Unknown key '{0}' in section [{1}], ignoring it."
                               .format(key, section))
                continue
            if raw is None or raw.strip() == "":
                if isinstance(defaults[key], str) and (section, key) not in rc.CHOICES:
                    section_conf_dict[key] = ""
                continue
            try:
                val = _convert(raw, defaults[key])
                choices = rc.CHOICES.get((section, key))
                if choices is not None and val not in choices:
                    raise ValueError("'{0}' is not one of {1}".format(val, ", ".join(choices)))
                section_conf_dict[key] = val
            except ValueError as e:
                logger.warning("Invalid value for '{0}' in section [{1}] ({2}), using '{3}'."
                               .format(key, section, e, defaults[key]))
        return section_conf_dict

    #--------------------------------------------------------------------------
    def parse_conf_file(self):
        """
        Read the config file and update ``rc.params``.

        Returns
        -------
        bool
            True when the file was read and had the right version
        """
        # configparser quietly fails when the file doesn't exist
        if not os.access(self.conf_file, os.R_OK):
            logger.warning('Config file "{0}" cannot be read, using defaults.'
                           .format(self.conf_file))
            return False
        try:
            self.conf.read(self.conf_file, encoding='utf-8')
            logger.debug("Parsing config file\n\t'{0}' with sections {1}"
                         .format(self.conf_file, self.conf.sections()))

            if not self.read_conf_version():
                return False

            for section in self.conf.sections():
                if section == 'Common':
                    continue
                if section not in rc.params:
                    logger.warning("Unknown section [{0}] in config file, ignoring it."
                                   .format(section))
                    continue
                rc.params[section].update(self.parse_conf_section(section))

        # ----- Exceptions ----------------------
        except configparser.DuplicateSectionError as e:
            logger.error('{0} in config file "{1}", using defaults.'.format(e, self.conf_file))
            return False
        except configparser.Error as e:
            logger.error('Parsing Error in config file "{0}":\n{1}\nusing defaults.'
                         .format(self.conf_file, e))
            return False
        return True

#------------------------------------------------------------------------------
def apply_env():
    """
    Apply environment variables, currently only ``XUM_EVAL_PROVIDER_URL``
    which overrides the provider URL of the config file.
    """
    url = dirs.env(rc.PROVIDER_ENV)
    if url:
        rc.params['Provider']['url'] = url
        logger.debug("Provider URL from environment: {0}".format(url))
